# Generated by Django 4.2.7 on 2026-10-17 10:42

from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='TrainingRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(max_length=200)),
                ('mode', models.CharField(choices=[('ours', 'Визуальная политика, пул тканей'), ('ours-minus', 'Визуальная политика, одна ткань'), ('fixed', 'Политика по состоянию, одна ткань')], max_length=12)),
                ('seed', models.IntegerField()),
                ('output_dir', models.CharField(max_length=500)),
                ('status', models.CharField(choices=[('running', 'Выполняется'), ('interrupted', 'Прерван'), ('finished', 'Завершен'), ('failed', 'Ошибка')], default='running', max_length=12)),
                ('epochs_done', models.PositiveIntegerField(default=0)),
                ('checkpoint_path', models.CharField(blank=True, max_length=500)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
            ],
            options={
                'unique_together': {('output_dir', 'mode', 'seed')},
            },
        ),
        migrations.CreateModel(
            name='EpochMetric',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('epoch', models.PositiveIntegerField()),
                ('success_rate', models.FloatField()),
                ('mean_d_sum', models.FloatField()),
                ('critic1_loss', models.FloatField(null=True)),
                ('critic2_loss', models.FloatField(null=True)),
                ('actor_loss', models.FloatField(null=True)),
                ('alpha', models.FloatField(null=True)),
                ('aux_loss', models.FloatField(null=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='metrics', to='learning.trainingrun')),
            ],
            options={
                'ordering': ['epoch'],
                'unique_together': {('run', 'epoch')},
            },
        ),
        migrations.AddIndex(
            model_name='trainingrun',
            index=models.Index(fields=['status', 'updated_at'], name='learning_tr_status_7c1e2a_idx'),
        ),
    ]
